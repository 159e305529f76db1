const math = require('./lib/math');
const { sum } = require('./lib/math');

console.log(math.mean([1, 2, 3, 4]));
console.log(sum([5, 6]));

function greet(greeting, punct) { return greeting + ', ' + this.name + punct; }
const person = { name: 'Ada' };

console.log(greet.call(person, 'Hello', '!'));
console.log(greet.apply(person, ['Hi', '?']));
const bound = greet.bind(person, 'Hey');
console.log(bound('.'));

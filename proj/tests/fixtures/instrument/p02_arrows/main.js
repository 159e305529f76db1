const inc = x => x + 1;
const sq = (x) => { return x * x; };
function apply(f, v) { return f(v); }

console.log(inc(1), sq(3));
console.log(apply(inc, 5));
console.log([1, 2, 3].map(sq).join(','));
console.log(apply(y => y * 10, 4));

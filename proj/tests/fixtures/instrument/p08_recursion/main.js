function fact(n) { return n <= 1 ? 1 : n * fact(n - 1); }
function fib(n, memo = {}) {
  if (n < 2) return n;
  if (memo[n]) return memo[n];
  return (memo[n] = fib(n - 1, memo) + fib(n - 2, memo));
}
function label(n) { return `fact(${n}) = ${fact(n)}`; }

console.log(label(5));
console.log(fib(20));

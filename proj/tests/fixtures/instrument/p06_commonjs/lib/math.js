function sum(xs) { return xs.reduce((a, b) => a + b, 0); }
function mean(xs) { return sum(xs) / xs.length; }

module.exports = { sum, mean };

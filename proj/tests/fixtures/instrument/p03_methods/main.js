var counter = {
  n: 0,
  bump: function (k) { this.n += k; return this; },
  read() { return this.n; }
};

counter.bump(2).bump(3);
console.log(counter.read());
var alias = counter.bump;
alias.call(counter, 4);
console.log(counter.read());

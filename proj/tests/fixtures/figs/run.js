var parser = require('./callee.js');
var parseError = require('./caller.js');

parser.lexer.pastInput = function () { return 'x = 1 +'; };
parser.lexer.upcomingInput = function () { return ';'; };
parser.terminals_ = { 5: 'SEMICOLON' };
parser.parseError = parseError;

console.log(parser.parseError(0, ['NUMBER', 'IDENT'], 5));

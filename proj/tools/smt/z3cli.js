// SMT-LIB2 front end over the z3-solver npm package (Z3 compiled to WASM):
// reads a complete script on stdin and prints the solver output, which for
// the scripts this project emits is the sat/unsat/unknown status line.
'use strict';

const { init } = require('z3-solver');

async function main() {
  const chunks = [];
  for await (const chunk of process.stdin) chunks.push(chunk);
  const script = Buffer.concat(chunks).toString('utf8');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  try {
    const out = await Z3.eval_smtlib2_string(ctx, script);
    process.stdout.write(out.endsWith('\n') ? out : out + '\n');
  } catch (err) {
    process.stderr.write(String(err) + '\n');
    process.exitCode = 1;
  } finally {
    Z3.del_context(ctx);
  }
  process.exit(process.exitCode || 0);
}

main();

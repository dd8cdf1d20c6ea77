"""Line-oriented SMT-LIB front end for the cvc5 Python bindings.

Reads balanced commands from stdin and answers them on stdout, so the cvc5
wheel (which ships no executable) can be driven like `cvc5 --incremental`.
"""
import sys

import cvc5


def fresh():
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    solver.setOption("incremental", "true")
    sm = cvc5.SymbolManager(tm)
    return solver, sm, cvc5.InputParser(solver, sm)


solver, sm, parser = fresh()
depth = 0
buf = ""
for line in sys.stdin:
    buf += line
    for ch in line:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
    if depth != 0 or not buf.strip():
        continue
    text, buf = buf.strip(), ""
    if text == "(reset)":
        solver, sm, parser = fresh()
        sys.stdout.write("success\n")
        sys.stdout.flush()
        continue
    parser.setStringInput(cvc5.InputLanguage.SMT_LIB_2_6, text, "stdin")
    while True:
        cmd = parser.nextCommand()
        if cmd.isNull():
            break
        sys.stdout.write(cmd.invoke(solver, sm))
        sys.stdout.flush()

"""Freeze reference metrics for the snippet fixture.

Token counts come from the standard `tokenize` module, CST depth from tree-sitter-python
(comments and line continuations are extras and are skipped), and bound names, imports and
call counts from the standard `ast` module. Run from the repository root:

    python3 tests/oracle/gen_metrics_oracle.py > tests/fixtures/metrics/oracle.json
"""
import ast
import io
import json
import pathlib
import re
import sys
import tokenize

import tree_sitter
import tree_sitter_python

ROOT = pathlib.Path(__file__).resolve().parents[2]
SNIPPETS = ROOT / "tests" / "fixtures" / "metrics" / "snippets"
STDLIB = {
    line.strip()
    for line in (ROOT / "data" / "stdlib_modules_py310.txt").read_text().splitlines()
    if line.strip() and not line.startswith("#")
}
COUNTED = {tokenize.NAME, tokenize.NUMBER, tokenize.STRING, tokenize.OP, tokenize.ERRORTOKEN}
EXTRAS = {"comment", "line_continuation"}

parser = tree_sitter.Parser(tree_sitter.Language(tree_sitter_python.language()))


def code_tokens(src):
    return sum(1 for t in tokenize.generate_tokens(io.StringIO(src).readline) if t.type in COUNTED)


def depth(node):
    kids = [c for c in node.children if c.type not in EXTRAS]
    return 1 + max((depth(c) for c in kids), default=0)


def byte_offset(src_bytes, line, col):
    lines = src_bytes.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + col


def target_function(tree, name):
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == name:
            return node
    raise SystemExit(f"no function {name}")


def walk_without_decorators(fn):
    """Nodes of the function definition proper; decorators sit outside the target span."""
    parts = [fn.args, *fn.body] + ([fn.returns] if fn.returns else [])
    for part in parts:
        yield from ast.walk(part)


def bound_names(fn):
    names = set()
    for node in walk_without_decorators(fn):
        if isinstance(node, ast.arg):
            names.add(node.arg)
        elif isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            names.add(node.id)
    return names


def imports(tree):
    mods = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            mods.update(a.name.split(".")[0] for a in node.names)
        elif isinstance(node, ast.ImportFrom) and node.level == 0:
            mods.add(node.module.split(".")[0])
    return mods


def main():
    out = {}
    for path in sorted(SNIPPETS.glob("*.py")):
        src = path.read_text()
        name = re.match(r"# target: (\w+)", src).group(1)
        tree = ast.parse(src)
        fn = target_function(tree, name)
        raw = src.encode()
        mods = imports(tree)
        out[path.name] = {
            "target": name,
            "span": [byte_offset(raw, fn.lineno, fn.col_offset), byte_offset(raw, fn.end_lineno, fn.end_col_offset)],
            "code_tokens": code_tokens(src),
            "ast_depth": depth(parser.parse(raw).root_node),
            "variables": sorted(bound_names(fn)),
            "stdlib_imports": sorted(m for m in mods if m in STDLIB),
            "external_imports": sorted(m for m in mods if m not in STDLIB),
            "function_calls_in_target": sum(isinstance(n, ast.Call) for n in walk_without_decorators(fn)),
        }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()

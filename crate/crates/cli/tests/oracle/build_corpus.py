# SPDX-License-Identifier: Apache-2.0
"""Regenerates the benchmark corpora under corpus/ from the case sources.

Each case becomes `<suite>/<case>/main.ipynb` plus `truth.json` traced by
tracer.py. Cells are separated by `# %%` lines; a bracketed list after the
marker, as in `# %% [Feature Engineering]`, is the expected header content of
that cell and goes to `headers.json`.

    python3 build_corpus.py [--check] [suite ...]
"""

import argparse
import json
import os
import re
import shutil
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.normpath(os.path.join(HERE, "..", "..", "..", ".."))
STUBS = os.path.join(ROOT, "crates", "core", "data", "stubs")
CORPUS = os.path.join(ROOT, "corpus")
MARKER = re.compile(r"^# %%(?: \[(.*)\])?$")

sys.path.insert(0, HERE)


def suites():
    import cases_flow
    import cases_micro
    import cases_notebooks

    return {"flow": cases_flow.CASES, "micro": cases_micro.CASES, "notebooks": cases_notebooks.CASES}


def split(source):
    """(cell sources, header truth or None per cell)"""
    cells, headers, current, header = [], [], None, None
    for line in source.strip("\n").split("\n"):
        m = MARKER.match(line)
        if m:
            if current is not None:
                cells.append("\n".join(current).strip("\n"))
                headers.append(header)
            current = []
            header = [h.strip() for h in m.group(1).split(",") if h.strip()] if m.group(1) is not None else None
            continue
        if current is None:
            current = []
        current.append(line)
    if current is not None:
        cells.append("\n".join(current).strip("\n"))
        headers.append(header)
    return cells, headers


def notebook(cells):
    out = []
    for src in cells:
        if src.startswith("## "):
            kind = "markdown"
        else:
            kind = "code"
        lines = src.split("\n")
        cell = {"cell_type": kind, "metadata": {}, "source": [l + "\n" for l in lines[:-1]] + [lines[-1]]}
        if kind == "code":
            cell["execution_count"] = None
            cell["outputs"] = []
        out.append(cell)
    return {
        "cells": out,
        "metadata": {
            "kernelspec": {"display_name": "Python 3", "language": "python", "name": "python3"},
            "language_info": {"name": "python"},
        },
        "nbformat": 4,
        "nbformat_minor": 4,
    }


def dump(value):
    return json.dumps(value, indent=1) + "\n"


def trace(path):
    out = subprocess.run(
        [sys.executable, os.path.join(HERE, "tracer.py"), "--stubs", STUBS, path],
        check=True,
        capture_output=True,
        text=True,
    )
    return out.stdout


def build_case(suite, name, source):
    cells, headers = split(source)
    nb = dump(notebook(cells))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "main.ipynb")
        with open(path, "w") as f:
            f.write(nb)
        truth = trace(path)
    files = {"main.ipynb": nb, "truth.json": truth}
    if any(h is not None for h in headers):
        code = [h for c, h in zip(cells, headers) if not c.startswith("## ")]
        files["headers.json"] = dump({"cells": {str(i): h for i, h in enumerate(code, start=1) if h}})
    return files


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true", help="fail if a generated file differs")
    ap.add_argument("suite", nargs="*")
    args = ap.parse_args()
    stale = []
    for suite, cases in suites().items():
        if args.suite and suite not in args.suite:
            continue
        suite_dir = os.path.join(CORPUS, suite)
        if os.path.isdir(suite_dir):
            for old in sorted(set(os.listdir(suite_dir)) - set(cases)):
                stale.append(os.path.join(suite_dir, old))
                if not args.check:
                    shutil.rmtree(os.path.join(suite_dir, old))
        for name, source in cases.items():
            try:
                files = build_case(suite, name, source)
            except subprocess.CalledProcessError as e:
                sys.exit("%s/%s: oracle failed\n%s" % (suite, name, e.stderr))
            case_dir = os.path.join(CORPUS, suite, name)
            os.makedirs(case_dir, exist_ok=True)
            for file, text in files.items():
                path = os.path.join(case_dir, file)
                old = open(path).read() if os.path.exists(path) else None
                if old != text:
                    stale.append(path)
                    if not args.check:
                        with open(path, "w") as f:
                            f.write(text)
    if args.check and stale:
        sys.exit("stale:\n" + "\n".join(stale))


if __name__ == "__main__":
    main()

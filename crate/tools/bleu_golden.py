"""Regenerates crates/core/tests/fixtures/bleu/golden.tsv with sacrebleu 1.3.1.

    pip install sacrebleu==1.3.1
    python3 tools/bleu_golden.py
"""
import pathlib

import sacrebleu

assert sacrebleu.VERSION == "1.3.1", sacrebleu.VERSION

root = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/bleu"
rows = ["# name\tscore\tcorrect\ttotal\thyp_len\tref_len\tbrevity_penalty"]
for hyp in sorted(root.glob("*.hyp")):
    hyps = hyp.read_text(encoding="utf-8").splitlines()
    refs = hyp.with_suffix(".ref").read_text(encoding="utf-8").splitlines()
    b = sacrebleu.corpus_bleu(hyps, [refs], smooth_method="exp", tokenize="13a")
    rows.append("\t".join([
        hyp.stem,
        repr(b.score),
        ",".join(map(str, b.counts)),
        ",".join(map(str, b.totals)),
        str(b.sys_len),
        str(b.ref_len),
        repr(b.bp),
    ]))
(root / "golden.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

lines = (root / "tricky.txt").read_text(encoding="utf-8").splitlines()
(root / "tricky.tok").write_text(
    "".join(sacrebleu.tokenize_13a(l.rstrip()) + "\n" for l in lines), encoding="utf-8"
)

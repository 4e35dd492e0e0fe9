"""Freeze reference BLEU values for constructed token pairs using NLTK's sentence_bleu.

Smoothing: a higher-order precision with zero matches becomes 1 / (candidate n-grams + 1).

    python3 tests/oracle/gen_bleu_oracle.py > tests/fixtures/metrics/bleu_oracle.json
"""
import json
import sys
from fractions import Fraction

from nltk.translate.bleu_score import sentence_bleu

PAIRS = [
    ("one_substitution",
     "def add ( a , b ) : return a + b".split(),
     "def add ( a , b ) : return a - b".split()),
    ("reordered_statements",
     "x = 1 y = 2 z = x + y print ( z )".split(),
     "y = 2 x = 1 z = x + y print ( z )".split()),
    ("shorter_candidate",
     "return sorted ( items , key = len )".split(),
     "result = sorted ( items , key = len , reverse = True ) return result".split()),
    ("no_trigram_overlap",
     "a b c d e f".split(),
     "a x b y c z".split()),
    ("three_token_candidate",
     "return x +".split(),
     "return x + 1".split()),
]


def smoothing(p_n, references, hypothesis, hyp_len=None, **kwargs):
    out = []
    for i, p in enumerate(p_n):
        if i > 0 and p.numerator == 0:
            grams = max(0, len(hypothesis) - i)
            out.append(Fraction(1, grams + 1))
        else:
            out.append(p)
    return out


def main():
    records = []
    for name, cand, ref in PAIRS:
        value = sentence_bleu([ref], cand, weights=(0.25, 0.25, 0.25, 0.25), smoothing_function=smoothing)
        records.append({"name": name, "candidate": cand, "reference": ref, "bleu": float(value)})
    json.dump(records, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()

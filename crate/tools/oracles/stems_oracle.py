"""Regenerates stems_golden.json with NLTK's Snowball English stemmer,
iterated to a fixed point. Reads the word list from the existing file
(or from argv[1], one word per line)."""
import json
import sys

from nltk.stem.snowball import SnowballStemmer

PATH = "crates/core/tests/fixtures/stems_golden.json"


def fixed_point(stemmer, word):
    s = stemmer.stem(word)
    while stemmer.stem(s) != s:
        s = stemmer.stem(s)
    return s


def main():
    if len(sys.argv) > 1:
        words = [w.strip() for w in open(sys.argv[1]) if w.strip()]
    else:
        words = list(json.load(open(PATH)))
    stemmer = SnowballStemmer("english")
    out = {w: fixed_point(stemmer, w) for w in sorted(set(words))}
    with open(PATH, "w") as f:
        json.dump(out, f, indent=0, sort_keys=True)


if __name__ == "__main__":
    main()

"""Independent character/word/sentence counter for the bundled mini corpora.

Writes tests/golden/mini_corpus_stats.json; --check compares instead.
Counts follow the documented rules (grapheme clusters, whitespace words,
terminator + whitespace sentence ends with the abbreviation guard) but share
no code with the library.
"""

import json
import re
import sys
import unicodedata
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
GOLDEN = ROOT / "tests" / "golden" / "mini_corpus_stats.json"
GUARD = {"Dr.", "Mr.", "Mrs.", "Ms.", "St.", "e.g.", "i.e.", "etc.", "vs.", "Fig.", "No."}


def clusters(s):
    # Good enough for the mini corpora: combining marks join the previous
    # character; nothing else there needs full segmentation.
    return sum(1 for c in s if not unicodedata.combining(c))


def sentences(s):
    words = s.split()
    count, open_sentence = 0, False
    for w in words:
        open_sentence = True
        if re.search(r"[.!?]$", w) and w not in GUARD:
            count += 1
            open_sentence = False
    return count + (1 if open_sentence else 0)


def stats(path):
    refs = [json.loads(line)["reference"] for line in path.read_text(encoding="utf-8").splitlines() if line]
    n = len(refs)
    return {
        "avg_chars": sum(clusters(r) for r in refs) / n,
        "avg_words": sum(len(r.split()) for r in refs) / n,
        "avg_sentences": sum(sentences(r) for r in refs) / n,
        "task": json.loads(path.read_text(encoding="utf-8").splitlines()[0])["task"],
    }


def main():
    out = {p.name: stats(p) for p in sorted((ROOT / "data" / "mini").glob("*.jsonl"))}
    text = json.dumps(out, indent=1, sort_keys=True) + "\n"
    if "--check" in sys.argv:
        ok = GOLDEN.read_text() == text
        print("golden file matches" if ok else "golden file is stale; rerun without --check")
        return 0 if ok else 1
    GOLDEN.write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

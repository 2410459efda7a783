"""Export WordNet relations to the knowledge-base TSV format.

Needs nltk and its wordnet corpus (``python3 -m nltk.downloader wordnet``);
neither is a dependency of the package itself.

    python3 tools/wordnet_to_tsv.py kb.tsv [--words vocab.txt] [--pos a,n,v,r]
"""

import argparse
import sys


def lemma_name(lemma):
    return lemma.name().replace("_", " ").lower()


def export(out, words=None, pos=("a", "s", "n", "v", "r")):
    from nltk.corpus import wordnet as wn

    seen = set()

    def emit(a, rel, b):
        if a == b or " " in a or " " in b or (a, rel, b) in seen:
            return
        if words is not None and a not in words and b not in words:
            return
        seen.add((a, rel, b))
        out.write(f"{a}\t{rel}\t{b}\n")

    for synset in wn.all_synsets():
        if synset.pos() not in pos:
            continue
        lemmas = synset.lemmas()
        names = [lemma_name(l) for l in lemmas]
        for a in names:
            for b in names:
                emit(a, "synonym", b)
            for hyper in synset.hypernyms():
                for b in hyper.lemmas():
                    emit(a, "hypernym", lemma_name(b))
        for lemma in lemmas:
            for ant in lemma.antonyms():
                emit(lemma_name(lemma), "antonym", lemma_name(ant))
    return len(seen)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output")
    ap.add_argument("--words", help="only keep relations touching these words (one per line)")
    ap.add_argument("--pos", default="a,s,n,v,r")
    args = ap.parse_args()
    try:
        import nltk  # noqa: F401
    except ImportError:
        sys.exit("nltk is required: pip install nltk")
    words = None
    if args.words:
        with open(args.words, encoding="utf-8") as fh:
            words = {line.strip().lower() for line in fh if line.strip()}
    with open(args.output, "w", encoding="utf-8") as out:
        out.write("# exported from WordNet\n")
        n = export(out, words, tuple(args.pos.split(",")))
    print(f"wrote {n} relations to {args.output}")


if __name__ == "__main__":
    main()

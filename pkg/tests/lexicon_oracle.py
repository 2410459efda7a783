"""Independent re-derivation of lexicon mining used as a test oracle."""

import math

from lexst.classifier import forward


def oracle_lexicon(model, docs, labels, num_classes, n, k_percent, stopwords):
    # step 1: every example's top-n attention words, ranked by brute-force scan
    picked = []
    for doc in docs:
        attn = forward(model, doc).attention
        # best attention per word, earliest position among ties
        best = {}
        for pos, word in enumerate(doc.token_strings):
            if word in stopwords or doc.tokens[pos] == 0:
                continue
            key = (attn[pos], -pos)
            if word not in best or key > best[word]:
                best[word] = key
        ordered = sorted(best, key=lambda w: best[w], reverse=True)
        picked.append(ordered[:n])

    # step 2: drop words extracted under more than one class
    classes_of = {}
    for words, y in zip(picked, labels):
        for w in words:
            classes_of.setdefault(w, set()).add(y)

    # step 3: per-class frequency ranking, keep ceil(k%)
    result = []
    for c in range(num_classes):
        mine = [w for w, cs in classes_of.items() if cs == {c}]
        stats = []
        for w in mine:
            hits = []
            for doc, y in zip(docs, labels):
                if y != c:
                    continue
                attn = forward(model, doc).attention
                hits += [attn[i] for i, t in enumerate(doc.token_strings) if t == w]
            stats.append((-len(hits), -sum(hits) / len(hits), w))
        stats.sort()
        keep = math.ceil(k_percent / 100 * len(stats)) if stats else 0
        result.append([s[2] for s in stats[:keep]])
    return result

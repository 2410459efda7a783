from lexst.corpus import Document, Vocabulary


def make_doc(words, vocab=None):
    doc = Document.from_words(words)
    return vocab.encode(doc) if vocab is not None else doc


def vocab_of(*word_lists):
    return Vocabulary(sorted({w for ws in word_lists for w in ws}))


ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")

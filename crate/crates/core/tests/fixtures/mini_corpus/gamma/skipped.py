def below_cutoff(a, b):
    """This repository has too few stars.

    Its functions never reach the raw corpus.  The manifest entry is
    kept so the skip shows up in the run report.
    """
    if a > b:
        return a
    elif a < b:
        return b
    for x in (a, b):
        if x is None:
            return None
    return a

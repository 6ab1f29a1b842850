def mean(values):
    """Arithmetic mean of a non-empty sequence."""
    return sum(values) / (len(values) - 1)


def total(values):
    return sum(values)

"""Joining cleartext transport headers with the sealed ones."""


def merge_headers(outer, sealed):
    """Union of both lists where any sealed name replaces every outer value.

    Names compare case-insensitively. Cookie is an ordinary header here, so a
    sealed Cookie line drops all cleartext cookies wholesale.
    """
    sealed = list(sealed)
    sealed_names = {name.lower() for name, _ in sealed}
    return [(n, v) for n, v in outer if n.lower() not in sealed_names] + sealed

"""Cookie header handling after RFC 6265.

``parse_cookie_header`` reads what a user agent sends (``name=value`` pairs
joined by ``"; "``) with the RFC's tolerant splitting: pairs without ``=`` or
with an empty name are dropped, and whitespace around names and values is
trimmed. ``parse_set_cookie`` applies the same rules to response cookies.
"""

from dataclasses import dataclass, field

_WS = " \t"


@dataclass(frozen=True)
class Cookie:
    name: str
    value: str
    attributes: tuple = ()


@dataclass
class CookieJar:
    entries: list = field(default_factory=list)

    def get(self, name, default=None):
        for c in self.entries:
            if c.name == name:
                return c.value
        return default

    def pairs(self):
        return [(c.name, c.value) for c in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _split_pair(pair):
    name, sep, value = pair.partition("=")
    if not sep:
        return None
    name = name.strip(_WS)
    if not name:
        return None
    return name, value.strip(_WS)


def parse_cookie_header(value) -> CookieJar:
    if isinstance(value, bytes):
        value = value.decode("latin-1")
    jar = CookieJar()
    for piece in value.split(";"):
        pair = _split_pair(piece)
        if pair is not None:
            jar.entries.append(Cookie(*pair))
    return jar


def parse_cookie_headers(values) -> CookieJar:
    """Parse several Cookie header lines into one jar, keeping order."""
    jar = CookieJar()
    for value in values:
        jar.entries.extend(parse_cookie_header(value).entries)
    return jar


def serialize_cookie_header(pairs) -> str:
    return "; ".join(f"{name}={value}" for name, value in pairs)


def parse_set_cookie(value: str):
    """Return a Cookie with lower-cased attribute names, or None if ignored."""
    first, _, rest = value.partition(";")
    pair = _split_pair(first)
    if pair is None:
        return None
    attrs = []
    for av in rest.split(";") if rest else []:
        key, _, val = av.partition("=")
        key = key.strip(_WS)
        if key:
            attrs.append((key.lower(), val.strip(_WS)))
    return Cookie(pair[0], pair[1], tuple(attrs))

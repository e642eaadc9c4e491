from typing import Any, Callable, Iterable, Tuple, Sequence, Iterator, TypeVar

T = TypeVar('T')


def bifurcate(x: Iterable, lhs: Callable[[Any], bool]) -> Tuple[list, list]:
    """
    Split an iterable into two lists depending on a condition.

    :param x: An iterable.
    :param lhs: A function that takes an element of x; when this returns True, the element is added to the left output,
      when this returns False, the element is added to the right output.
    :return: Two lists.
    """
    l, r = [], []
    for el in x:
        if lhs(el):
            l.append(el)
        else:
            r.append(el)
    return l, r


def identity(x: Any) -> Any:
    return x


def chunks(seq: Sequence[T], size: int) -> Iterator[Sequence[T]]:
    if size < 1:
        raise ValueError(f"Expected a positive chunk size, got {size}.")
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def parse_key_values(lines: Iterable[str], sep: str = '=') -> dict:
    """
    Parse `key=value` lines (blank lines and `#` comments are skipped). Values are left as strings.
    """
    out = {}
    for i, line in enumerate(lines, 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if sep not in line:
            raise ValueError(f"Line {i}: expected `key{sep}value`, got '{line}'.")
        k, v = line.split(sep, 1)
        out[k.strip()] = v.strip()
    return out

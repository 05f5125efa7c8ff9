from daerelax import instances
from daerelax.textio import parse_dae

DECL = "var x1, x2, x3, x4;"


def ex(text):
    """Parse a single expression over x1..x4."""
    return parse_dae(f"{DECL} eq {text} = 0;").equations[0]


def load(name):
    return parse_dae(instances.text(name))

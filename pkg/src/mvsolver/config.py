"""Run configuration: dataclass, flat key=value file parsing, errors."""

from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    """Malformed or unusable dataset content."""


@dataclass
class TrainConfig:
    d: int = 64                     # model width
    d_align: int = 0                # alignment projection width; 0 = use d
    seed: int = 0
    lr: float = 1e-3
    weight_decay: float = 0.01
    batch_size: int = 12
    epochs: int = 30
    beam_size: int = 4
    max_quantities: int = 12
    tokenizer: str = "whitespace"   # whitespace | char
    attention: str = "dot"          # dot | additive
    constants: tuple = (1.0, 3.14)
    augment: bool = True
    alignment: bool = True
    align_metric: str = "cosine"    # cosine | l2
    td_rep: str = "subtree_fusion"        # | parent_embedding
    bu_rep: str = "mapping_embedding"     # | triples_fusion
    w_t2b: float = 1.0
    w_b2t: float = 1.0
    w_align: float = 1.0
    disc_epochs: int = 10
    disc_max_negatives: int = 8
    max_steps_margin: int = 1       # decode cap = 2*max gold L + this

    def validated(self):
        if self.d <= 0 or self.d % 2:
            raise ConfigError("d must be positive and even, got %d" % self.d)
        for name, allowed in (("tokenizer", ("whitespace", "char")),
                              ("attention", ("dot", "additive")),
                              ("align_metric", ("cosine", "l2")),
                              ("td_rep", ("subtree_fusion", "parent_embedding")),
                              ("bu_rep", ("mapping_embedding", "triples_fusion"))):
            if getattr(self, name) not in allowed:
                raise ConfigError("%s must be one of %s, got %r"
                                  % (name, "/".join(allowed), getattr(self, name)))
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        return self

    @property
    def align_width(self):
        return self.d_align or self.d


def _coerce(name, raw, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError("bad value %r for config key %s" % (raw, name))


def parse_config(text):
    """Flat `key = value` lines; '#' comments; unknown keys rejected."""
    by_name = {}
    for f in fields(TrainConfig):
        kind = f.type if isinstance(f.type, type) else \
            {"int": int, "float": float, "str": str, "bool": bool,
             "tuple": tuple}.get(str(f.type), str)
        by_name[f.name] = kind
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected key = value" % lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in by_name:
            raise ConfigError("line %d: unknown config key %r" % (lineno, key))
        out[key] = _coerce(key, raw, by_name[key])
    return TrainConfig(**out).validated()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())

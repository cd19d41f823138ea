"""
Command-line configuration: one validated bundle of pipeline, CNN and BoF
settings, read from a KEY=value file and overridden by flags.

File keys are the lower-case field names of PipelineConfig and TrainOptions,
the BofOptions field names prefixed with `bof_`, plus `seed` and `jobs`.
"""
from dataclasses import dataclass, field, fields, replace

from dotenv import dotenv_values

from models.images import ChannelWeights
from models.pipeline import PipelineConfig
from models.network import TrainOptions
from models.bof import BofOptions
from utils.errors import ConfigError
from config.settings import DEFAULT_SEED, DEFAULT_JOBS

BOF_PREFIX = 'bof_'
GLOBAL_KEYS = ('seed', 'jobs')

_PIPELINE_KEYS = tuple(f.name for f in fields(PipelineConfig))
_TRAIN_KEYS = tuple(f.name for f in fields(TrainOptions) if f.name != 'seed')
_BOF_KEYS = tuple(BOF_PREFIX + f.name for f in fields(BofOptions) if f.name != 'seed')


def known_keys():
    return GLOBAL_KEYS + _PIPELINE_KEYS + _TRAIN_KEYS + _BOF_KEYS


@dataclass(frozen=True)
class CliConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    train: TrainOptions = field(default_factory=TrainOptions)
    bof: BofOptions = field(default_factory=BofOptions)
    seed: int = DEFAULT_SEED
    jobs: int = DEFAULT_JOBS

    def validate(self):
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        for section in (self.pipeline, self.train, self.bof):
            try:
                section.validate()
            except ValueError as e:
                raise ConfigError(str(e)) from e
        return self


def _coerce(key, value, default):
    """Convert a file/flag value to the type of the field default."""
    if not isinstance(value, str):
        return value
    text = value.strip()
    if isinstance(default, ChannelWeights):
        return ChannelWeights.parse(text)
    if isinstance(default, bool):
        if text.lower() in ('1', 'true', 'yes', 'on'):
            return True
        if text.lower() in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(default, tuple):
        kind = float if any(isinstance(v, float) for v in default) else int
        return tuple(kind(p) for p in text.split(','))
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def read_config_file(path):
    """KEY=value pairs from path, keys lower-cased; unknown keys are rejected."""
    try:
        with open(path, encoding='utf-8') as f:
            raw = dotenv_values(stream=f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    values = {}
    allowed = set(known_keys())
    for key, value in raw.items():
        name = key.strip().lower()
        if name not in allowed:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        if value is None:
            raise ConfigError(f"{path}: key {key!r} has no value")
        values[name] = value
    return values


def build_cli_config(path=None, overrides=None):
    """
    Defaults, then the config file (if any), then flag overrides (None = not given).

    Raises:
        ConfigError: unknown key, unparsable value or invalid combination
    """
    values = read_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known_keys():
            raise ConfigError(f"unknown option {key!r}")
        values[key] = value

    base = CliConfig()
    pipeline_kw, train_kw, bof_kw = {}, {}, {}
    try:
        for key, value in values.items():
            if key in _PIPELINE_KEYS:
                pipeline_kw[key] = _coerce(key, value, getattr(base.pipeline, key))
            elif key in _TRAIN_KEYS:
                train_kw[key] = _coerce(key, value, getattr(base.train, key))
            elif key in _BOF_KEYS:
                name = key[len(BOF_PREFIX):]
                bof_kw[name] = _coerce(key, value, getattr(base.bof, name))
        seed = _coerce('seed', values.get('seed', base.seed), base.seed)
        jobs = _coerce('jobs', values.get('jobs', base.jobs), base.jobs)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    config = CliConfig(
        pipeline=replace(base.pipeline, **pipeline_kw),
        train=replace(base.train, seed=seed, **train_kw),
        bof=replace(base.bof, seed=seed, **bof_kw),
        seed=seed,
        jobs=jobs,
    )
    return config.validate()

# Copyright 2023 Cloudbase Solutions Srl
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

import dataclasses
import logging
import os
from io import IOBase
from typing import Mapping
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import yaml

from secantcert import utils
from secantcert.ffield import DEFAULT_PRIME, FieldError, FieldModulus
from secantcert.monomials import DEFAULT_BLOCK_WIDTH
from secantcert.verifier import DEFAULT_MAX_BASIC_ENTRIES, DEFAULT_RETRIES, MAX_SEED


LOG = logging.getLogger(__name__)

ENV_PREFIX = "SECANTCERT_"
ENV_OVERRIDES = ("prime", "threads")
OUTPUT_FORMATS = ("text", "json")


class ConfigError(ValueError):
    """ Raised on invalid run configurations. """


def _default_threads() -> int:
    return os.cpu_count() or 1


@dataclasses.dataclass
class RunConfig:
    prime: int = DEFAULT_PRIME
    seed: int|None = None
    retries: int = DEFAULT_RETRIES
    threads: int = dataclasses.field(default_factory=_default_threads)
    block_width: int = DEFAULT_BLOCK_WIDTH
    d: int = 3
    out_dir: str = "certificates"
    format: str = "text"
    max_n: int|None = None
    small_n_axiom: bool = False
    max_basic_entries: int = DEFAULT_MAX_BASIC_ENTRIES

    def __post_init__(self):
        try:
            FieldModulus(self.prime)
        except FieldError as ex:
            raise ConfigError(f"Invalid prime in run config: {ex}") from ex
        if self.retries < 0:
            raise ConfigError(f"Retries must be nonnegative, got {self.retries}")
        if self.threads < 1:
            raise ConfigError(f"Thread count must be positive, got {self.threads}")
        if self.block_width < 1:
            raise ConfigError(f"Block width must be positive, got {self.block_width}")
        if self.format not in OUTPUT_FORMATS:
            raise ConfigError(
                f"Unsupported output format '{self.format}'. Supported "
                f"formats are: {OUTPUT_FORMATS}")
        if self.seed is not None and not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"Seed must lie in [0, 2^64), got {self.seed}")

    @property
    def modulus(self) -> FieldModulus:
        return FieldModulus(self.prime)

    @classmethod
    def from_dict(cls, val: dict) -> Self:
        if not isinstance(val, dict):
            raise ConfigError(f"{cls.__name__}.from_dict() got non-dict: {val!r}")
        supported = [f.name for f in dataclasses.fields(cls)]
        unsupported = [k for k in val if k not in supported]
        if unsupported:
            raise ConfigError(
                f"Unsupported config keys {unsupported}. Supported keys "
                f"are: {supported}")
        try:
            return cls(**val)
        except TypeError as ex:
            raise ConfigError(f"Invalid run config {val}: {ex}") from ex

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_yaml_file(path_or_file: str|IOBase) -> dict:
    if isinstance(path_or_file, str):
        with open(path_or_file, 'r') as fin:
            val = yaml.safe_load(fin)
    else:
        val = yaml.safe_load(path_or_file)
    if val is None:
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"Config file must hold a mapping, got {type(val)}")
    return val


def env_overrides(environ: Mapping[str, str]) -> dict:
    res = {}
    for key in ENV_OVERRIDES:
        envvar = f"{ENV_PREFIX}{key.upper()}"
        if envvar not in environ:
            continue
        try:
            res[key] = int(environ[envvar])
        except ValueError as ex:
            raise ConfigError(
                f"Environment variable {envvar} must be an integer, got "
                f"'{environ[envvar]}'") from ex
    return res


def load_config(path_or_file: str|IOBase|None=None,
                environ: Mapping[str, str]|None=None,
                overrides: dict|None=None) -> RunConfig:
    """ Layers defaults, an optional YAML file, the environment and explicit
    overrides (None values in `overrides` are ignored), highest last. """
    val = RunConfig().to_dict()
    if path_or_file is not None:
        val = utils.merge_dicts(val, load_yaml_file(path_or_file))
    val = utils.merge_dicts(val, env_overrides(os.environ if environ is None else environ))
    if overrides:
        val = utils.merge_dicts(
            val, {k: v for k, v in overrides.items() if v is not None})

    res = RunConfig.from_dict(val)
    LOG.debug(f"load_config(): {res}")
    return res

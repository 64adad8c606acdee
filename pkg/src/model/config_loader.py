import logging
from pathlib import Path

from dotenv import dotenv_values

from model.parameters import PhysicalInputs, SystemParams, derive_constants
from utils.exceptions import ConfigError, InvalidParameterError

INT_KEYS = {'buffer_cap', 'packets_per_task', 'local_slots', 'cloud_slots'}
DIRECT_REQUIRED = ['alpha', 'beta', 'local_slots', 'cloud_slots', 'p_loc', 'p_tx']
DEFAULTS = {'buffer_cap': 50, 'packets_per_task': 1, 'feedback_slots': 0.0}
DEFAULT_SLOT_LEN = 0.02


class ConfigLoader:
    def __init__(self):
        self.known_keys = set(SystemParams.field_names()) | set(PhysicalInputs.field_names())

    def load(self, path, **overrides) -> SystemParams:
        """Read a flat key=value file and build SystemParams, deriving what is not given"""
        path = Path(path)
        if not path.is_file():
            logging.error(f"Configuration file not found: {path}")
            raise ConfigError(f"configuration file {path} not found")
        try:
            raw = dotenv_values(path, interpolate=False)
        except OSError as e:
            logging.error(f"Cannot read configuration {path}: {e}")
            raise ConfigError(f"cannot read configuration {path}: {e}")

        lines = self._key_lines(path)
        values = self._convert(raw, lines)
        for key, value in overrides.items():
            if value is not None:
                values[key] = value

        return self.build(values, lines)

    def build(self, values: dict, lines=None) -> SystemParams:
        lines = lines or {}
        if 'alpha' not in values:
            raise ConfigError("missing required key 'alpha'", key='alpha')

        physical_keys = [key for key in PhysicalInputs.field_names() if key in values]
        try:
            if physical_keys:
                params = self._from_physical(values, lines)
            else:
                params = self._from_direct(values)
        except ConfigError:
            raise
        except InvalidParameterError as e:
            logging.error(f"Invalid configuration: {e}")
            raise ConfigError(str(e))
        return params

    def _from_direct(self, values):
        missing = [key for key in DIRECT_REQUIRED if key not in values]
        if missing:
            raise ConfigError(f"missing required key '{missing[0]}'", key=missing[0])
        settings = dict(DEFAULTS)
        settings['slot_len'] = DEFAULT_SLOT_LEN
        settings.update(values)
        if 'p_max' not in settings:
            settings['p_max'] = settings['p_loc'] + settings['beta'] * settings['p_tx']
        return SystemParams(**{key: settings[key] for key in SystemParams.field_names()})

    def _from_physical(self, values, lines):
        missing = [key for key in PhysicalInputs.field_names() + ['slot_len'] if key not in values]
        if missing:
            raise ConfigError(f"missing required key '{missing[0]}' for physical derivation",
                              key=missing[0])
        phys = PhysicalInputs(**{key: values[key] for key in PhysicalInputs.field_names()})
        settings = dict(DEFAULTS)
        settings.update(values)
        params = derive_constants(
            phys,
            slot_len=settings['slot_len'],
            alpha=settings['alpha'],
            buffer_cap=settings['buffer_cap'],
            packets_per_task=settings['packets_per_task'],
            feedback_slots=settings['feedback_slots'],
            p_max=settings.get('p_max'),
            beta=settings.get('beta'),
        )
        explicit = {key: values[key] for key in ('local_slots', 'cloud_slots', 'p_loc', 'p_tx')
                    if key in values}
        if explicit:
            logging.info(f"Explicit values override derived constants: {sorted(explicit)}")
            params = params.with_overrides(**explicit)
        return params

    def _convert(self, raw, lines):
        values = {}
        for key, text in raw.items():
            if key not in self.known_keys:
                raise ConfigError(f"unknown configuration key '{key}'", key=key, line=lines.get(key))
            if text is None or text.strip() == "":
                raise ConfigError(f"key '{key}' has no value", key=key, line=lines.get(key))
            try:
                number = float(text)
                if key in INT_KEYS:
                    if number != int(number):
                        raise ValueError(text)
                    number = int(number)
            except ValueError:
                raise ConfigError(f"key '{key}' expects a number, got '{text}'",
                                  key=key, line=lines.get(key))
            values[key] = number
        return values

    def _key_lines(self, path):
        """Map each key to the line it is defined on, for error messages"""
        lines = {}
        try:
            with open(path, encoding='utf-8') as handle:
                for number, line in enumerate(handle, start=1):
                    stripped = line.strip()
                    if stripped.startswith('export '):
                        stripped = stripped[len('export '):]
                    if not stripped or stripped.startswith('#') or '=' not in stripped:
                        continue
                    lines[stripped.split('=', 1)[0].strip()] = number
        except OSError:
            pass
        return lines


config_loader = ConfigLoader()

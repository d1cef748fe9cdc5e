# pygeofuse/config/base.py

from abc import ABC, abstractmethod
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union
from datetime import datetime
from pathlib import Path
import yaml
import os

from ..errors import ConfigurationError
from ..utils import (
    resolve_path,
    get_caller_dir,
    RunResult,
)

_LIST_TYPES = {"int_list": int, "float_list": float, "str_list": str}


def flatten_keys(mapping: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten_keys(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _scalar(param_name: str, kind: str, value: Any) -> Any:
    if kind == "bool":
        if isinstance(value, bool):
            return value
        raise ConfigurationError(f"{param_name} is {value!r} but must be true or false")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigurationError(f"{param_name} is {value!r} but must be an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{param_name} is {value!r} but must be a number")
        return float(value)
    return str(value)


class BaseConfig(ABC):

    def __init__(self, **kwargs):
        self._has_log = True
        self._write_on_terminal = False
        self._defaults = {}

        for key, value in kwargs.items():
            setattr(self, key, value)

    def _set_config_options(self, has_log, write_on_terminal):
        self._has_log = has_log
        self._write_on_terminal = write_on_terminal

    @abstractmethod
    def _validate(self):
        """
        Validate the configuration parameters.

        This method must be implemented by subclasses to define their specific
        validation rules.

        Raises:
            ConfigurationError: If any parameter fails validation
        """
        pass

    def to_dict(self, exclude_private: bool = True) -> Dict[str, Any]:
        """
        Convert configuration to a dictionary, excluding None values.

        Args:
            exclude_private (bool): If True, excludes attributes starting with '_'
                                  like _defaults and other internal attributes

        Returns:
            Dict[str, Any]: Dictionary containing the configuration parameters
        """
        base_dict = {k: v for k, v in self.__dict__.items()
                    if v is not None and (not exclude_private or not k.startswith('_'))}
        return base_dict

    @classmethod
    def _key_map(cls, defaults: Mapping[str, dict]) -> Dict[str, str]:
        """Dotted config key (`train.lr`) -> parameter name (`lr`)."""
        return {
            f"{info['section']}.{info.get('key', name)}": name
            for name, info in defaults.items()
        }

    @classmethod
    def _coerce(cls, param_name: str, info: dict, value: Any) -> Any:
        """
        Convert a YAML value to the parameter type declared in the defaults.

        Raises:
            ConfigurationError: If the value does not fit the type
        """
        kind = info['type']
        if value is None:
            if info['default'] is None:
                return None
            raise ConfigurationError(f"{param_name} must be set")
        if kind == "path":
            return Path(value)
        if kind in _LIST_TYPES:
            if isinstance(value, str):
                value = [item.strip() for item in value.split(",") if item.strip()]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            inner = {int: "int", float: "float", str: "str"}[_LIST_TYPES[kind]]
            return [_scalar(param_name, inner, item) for item in value]
        return _scalar(param_name, kind, value)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> 'BaseConfig':
        """
        Create a configuration instance from dotted keys (`train.lr`) or
        nested sections (`{"train": {"lr": 0.05}}`).

        Raises:
            ConfigurationError: If a key is unknown, a value has the wrong type
                                or a required parameter is missing
        """
        defaults = cls._class_defaults()
        key_map = cls._key_map(defaults)
        values = {}
        for key, value in flatten_keys(mapping or {}).items():
            if key not in key_map:
                raise ConfigurationError(f"Unknown configuration key: {key}")
            name = key_map[key]
            values[name] = cls._coerce(key, defaults[name], value)

        missing = [
            key for key, name in key_map.items()
            if defaults[name]['required'] and name not in values
        ]
        if missing:
            raise ConfigurationError(f"Required configuration keys are not set: {', '.join(missing)}")
        return cls(**values)

    @classmethod
    def from_yaml(
        cls,
        yaml_path: Union[str, Path],
        overrides: Optional[Iterable[str]] = None,
    ) -> 'BaseConfig':
        """
        Create a configuration instance from a YAML file.

        Args:
            yaml_path (Union[str, Path]): Path to the YAML configuration file
            overrides (Iterable[str], optional): `section.key=value` strings applied
                                  on top of the file

        Returns:
            BaseConfig: New instance of the configuration class

        Raises:
            ConfigurationError: If a key is unknown or required fields are missing
            FileNotFoundError: If the YAML file doesn't exist
        """
        caller_dir = Path(get_caller_dir())
        yaml_path = resolve_path(yaml_path, caller_dir, create_parent=False)
        if not yaml_path.is_file():
            raise FileNotFoundError(f"Configuration file not found: {yaml_path}")

        config_dict = read_config_file(yaml_path)
        config_dict.update(parse_overrides(overrides or []))
        return cls.from_mapping(config_dict)

    @classmethod
    def _class_defaults(cls) -> Dict[str, dict]:
        return cls.DEFAULTS

    def apply_overrides(self, overrides: Iterable[str]) -> 'BaseConfig':
        """
        Apply `section.key=value` strings in place; values are read as YAML scalars.
        """
        key_map = self._key_map(self._defaults)
        for key, value in parse_overrides(overrides).items():
            if key not in key_map:
                raise ConfigurationError(f"Unknown configuration key: {key}")
            name = key_map[key]
            setattr(self, name, self._coerce(key, self._defaults[name], value))
        return self

    def dotted(self) -> Dict[str, Any]:
        """All parameters under their dotted keys, sorted, as plain YAML values."""
        out = {}
        for key, name in sorted(self._key_map(self._defaults).items()):
            value = getattr(self, name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out

    def echo(self, out_dir: Union[str, Path]) -> Path:
        """Write the resolved configuration to `<out_dir>/config.yaml` and print it."""
        text = yaml.safe_dump(self.dotted(), sort_keys=True, default_flow_style=None)
        config_file = Path(out_dir) / "config.yaml"
        config_file.write_text(text)
        print("Effective configuration:")
        print(text.rstrip())
        return config_file

    def _resolve_all_path(self, base_dir: Path) -> None:
        """
        Resolve all paths specified in _defaults relative to a base directory.

        This method handles both single paths and lists of paths, converting them
        to absolute paths based on the provided base directory.

        Args:
            base_dir (Path): Base directory for resolving relative paths
        """
        for param_name, param_info in self._defaults.items():
            if param_info['type'] == 'path':
                value = getattr(self, param_name)
                if value:
                    if isinstance(value, list):
                        resolved_values = [resolve_path(v, base_dir, create_parent=False) for v in value]
                        setattr(self, param_name, resolved_values)
                    else:
                        setattr(self, param_name, resolve_path(value, base_dir, create_parent=False))

    def _check_required_files(self) -> None:
        """
        Verify that all required input files and directories exist.

        Raises:
            ConfigurationError: If a required path parameter is not set
            FileNotFoundError: If any required path doesn't exist
        """
        for param_name, param_info in self._defaults.items():
            if param_info['required'] and param_info['type'] == 'path':
                value = getattr(self, param_name)
                if value is None or str(value) == "":
                    raise ConfigurationError(f"Required path is not set: {param_name}")

                if param_info['should_exist'] and not Path(value).exists():
                    raise FileNotFoundError(f"Required file not found: {value}")

    def _validate_choices(self):
        """
        Validate parameters against their allowed choices.

        Checks all parameters that have defined choices in _defaults to ensure
        they contain valid values. Skips optional parameters that are set to
        their default values. List parameters are checked item by item.

        Raises:
            ConfigurationError: If any parameter has an invalid value
        """
        for param_name, param_info in self._defaults.items():
            value = getattr(self, param_name)

            # Skip optional parameters with default values
            if not param_info['required'] and value == param_info['default']:
                continue

            if param_info['choices'] is not None:
                items = value if isinstance(value, (list, tuple)) else [value]
                bad = [item for item in items if item not in param_info['choices']]
                if bad:
                    raise ConfigurationError(
                        f"{param_name} is {value} but must be one of {param_info['choices']}"
                    )

    def _get_command_args(self, command_name: str) -> List[str]:
        """
        Command name followed by `section.key=value` for every required
        parameter and every optional parameter that differs from its default.
        """
        args = [command_name]
        key_map = self._key_map(self._defaults)
        for key, name in key_map.items():
            info = self._defaults[name]
            value = getattr(self, name)
            if info['required'] or value != info['default']:
                args.append(f"{key}={value}")
        return args

    def _handle_command_output(
            self,
            output: RunResult,
            output_identifier: str,
            output_path: Optional[str],
            log_dir: Union[str, Path],
        ):
        """
        Handle command output by logging details to a file and showing a summary on the terminal.

        Args:
            output: RunResult from run_command
            output_identifier (str): String identifying what was produced (e.g., "Dataset generation", "Training")
            output_path (str, optional): Path to the created output
            log_dir: Directory whose `logs/` subdirectory receives the log file
        Raises:
            The error captured by run_command if the command failed
        """
        success = output.returncode == 0

        # Display stdout/stderr directly to terminal if requested
        if self._write_on_terminal and output.stderr:
            print("\n--- STDERR ---")
            print(output.stderr)

        if self._has_log:
            log_dir = os.path.join(str(log_dir), "logs")
            os.makedirs(log_dir, exist_ok=True)

            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            log_file = os.path.join(log_dir, f"{output.args[0]}_{timestamp}.log")

            with open(log_file, 'w') as f:
                f.write(f"--- geofuse Command Execution Log ({timestamp}) ---\n\n")

                f.write(f"Command: {output.args[0]}\n")
                f.write(f"Full command: {' '.join(output.args)}\n\n")

                f.write("CONFIG:\n")
                f.write(yaml.safe_dump(self.dotted(), sort_keys=True, default_flow_style=None))
                f.write("\n")

                if output.stdout:
                    f.write("STDOUT:\n")
                    f.write(output.stdout)
                    f.write("\n\n")

                if output.stderr:
                    f.write("STDERR:\n")
                    f.write(output.stderr)
                    f.write("\n\n")

                f.write(f"Return code: {output.returncode}\n")
                f.write(f"Status: {'Success' if success else 'Failed'}\n")

                if output_path:
                    f.write(f"Output path: {output_path}\n")

            print(f"✓ Detailed execution log has been saved")

        if success:
            print(f"✓ {output_identifier} completed successfully")
            if output_path:
                print(f"  Results saved to: {output_path}")
        else:
            error_lines = output.stderr.strip().split('\n') if output.stderr else []
            if len(error_lines) > 2:
                # First and last lines carry the traceback head and the message
                error_summary = f"{error_lines[0]} [...] {error_lines[-1]}"
            else:
                error_summary = output.stderr.strip()
            print(f"✗ {output_identifier} failed. Error: {error_summary}")

            if output.error is not None:
                raise output.error
            raise RuntimeError(f"{output_identifier} failed.")


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Dotted settings of a configuration file: a YAML mapping (nested or
    dotted), or one `section.key=value` per line with `#` comments.
    """
    text = Path(path).read_text()
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError:
        loaded = text
    if loaded is None:
        return {}
    if isinstance(loaded, Mapping):
        return flatten_keys(loaded)

    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith('#')]
    try:
        return parse_overrides(lines)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path} holds neither a mapping nor key=value lines: {exc}") from exc


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Any]:
    """
    `["train.lr=0.05", "train.milestones=[10, 20]"]` -> `{"train.lr": 0.05, ...}`.
    """
    parsed = {}
    for item in overrides:
        key, sep, raw = str(item).partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"Override {item!r} is not of the form section.key=value")
        try:
            parsed[key] = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"Cannot read the value of override {item!r}: {exc}") from exc
    return parsed

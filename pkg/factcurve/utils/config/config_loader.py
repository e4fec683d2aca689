import json
import os

from factcurve.utils.errors import ConfigError

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.json")


class ConfigLoader:
    def __init__(self, config_path=DEFAULT_CONFIG_PATH):
        self.config_path = config_path
        self.config = self.__load_config()

    def __load_config(self):
        """Private method to load the JSON configuration file."""
        try:
            with open(self.config_path, "r", encoding="utf-8") as file:
                return json.load(file)
        except FileNotFoundError:
            raise ConfigError(f"Configuration file not found at {self.config_path}.")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Failed to parse JSON: {e}")

    def get(self, key, default=None):
        """Retrieve a configuration value."""
        return self.config.get(key, default)

    def section(self, name):
        """Retrieve a nested configuration block, empty when absent."""
        value = self.config.get(name)
        return dict(value) if isinstance(value, dict) else {}

    def merged_with(self, override_path):
        """
        Returns a new loader whose sections are this config overlaid with another file.

        :param override_path: Path to a user JSON config; its keys win section by section.
        """
        override = ConfigLoader(override_path)
        merged = ConfigLoader.__new__(ConfigLoader)
        merged.config_path = override_path
        merged.config = {key: (dict(value) if isinstance(value, dict) else value)
                         for key, value in self.config.items()}
        for key, value in override.config.items():
            if isinstance(value, dict) and isinstance(merged.config.get(key), dict):
                merged.config[key].update(value)
            else:
                merged.config[key] = value
        return merged

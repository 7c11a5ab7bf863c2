import logging
import time

from .errors import ScatterError

logger = logging.getLogger(__name__)


class Command:
    def __init__(self, command_id: str, name: str, description: str, handler, parameters: dict = None):
        self.command_id = command_id
        self.name = name
        self.description = description
        self.handler = handler
        self.parameters = parameters or {}
        self.required_parameters = []
        self.parameter_types = {}
        self.parameter_ranges = {}
        self.parameter_choices = {}
        self._observers = []

    def add_observer(self, observer):
        """Add an observer to be notified of command execution status"""
        if observer not in self._observers:
            self._observers.append(observer)

    def remove_observer(self, observer):
        """Remove an observer from the notification list"""
        if observer in self._observers:
            self._observers.remove(observer)

    def notify_observers(self, status: str, result: dict = None):
        """Notify all observers of command execution status"""
        for observer in self._observers:
            observer.on_command_executed(self, status, result)

    def validate_parameters(self, params: dict) -> tuple[bool, str]:
        """Validate command parameters against defined requirements"""
        for param in self.required_parameters:
            if params.get(param) is None:
                return False, f"Missing required parameter: {param}"

        for param, value in params.items():
            if value is None or param not in self.parameter_types:
                continue
            expected_type = self.parameter_types[param]
            if isinstance(value, bool) or not isinstance(value, expected_type):
                names = "/".join(t.__name__ for t in (expected_type if isinstance(expected_type, tuple) else (expected_type,)))
                return False, f"Invalid type for parameter {param}: expected {names}"

        for param, value in params.items():
            if value is not None and param in self.parameter_ranges:
                min_val, max_val = self.parameter_ranges[param]
                if (min_val is not None and value < min_val) or (max_val is not None and value > max_val):
                    return False, f"Parameter {param} out of range: {min_val} <= {value} <= {max_val}"

        for param, allowed in self.parameter_choices.items():
            if params.get(param) is not None and params[param] not in allowed:
                return False, f"Parameter {param} must be one of {', '.join(allowed)}"

        return True, "Parameters valid"

    def execute(self, config, params: dict = None) -> tuple[bool, dict]:
        """Run the command handler with validated parameters"""
        params = {**self.parameters, **(params or {})}
        is_valid, error_msg = self.validate_parameters(params)
        if not is_valid:
            error_result = {"error": error_msg, "exit_code": 2, "stage": "usage", "command_id": self.command_id}
            self.notify_observers("validation_error", error_result)
            return False, error_result

        started = time.time()
        try:
            result = self.handler(config, **params)
        except ScatterError as e:
            error_result = e.to_dict()
            error_result["command_id"] = self.command_id
            error_result["elapsed"] = time.time() - started
            self.notify_observers("error", error_result)
            return False, error_result
        except (ValueError, ArithmeticError, OSError) as e:
            logger.debug("command %s failed", self.command_id, exc_info=True)
            error_result = {
                "error": str(e),
                "type": type(e).__name__,
                "exit_code": 1,
                "stage": None,
                "command_id": self.command_id,
                "elapsed": time.time() - started,
            }
            self.notify_observers("error", error_result)
            return False, error_result

        result = dict(result or {})
        result.setdefault("exit_code", 0)
        result["command_id"] = self.command_id
        result["elapsed"] = time.time() - started
        self.notify_observers("success", result)
        return True, result

    def get_parameter_info(self) -> dict:
        """Get information about command parameters"""
        return {
            "required": self.required_parameters,
            "types": {name: getattr(t, "__name__", str(t)) for name, t in self.parameter_types.items()},
            "ranges": self.parameter_ranges,
            "choices": self.parameter_choices,
            "defaults": self.parameters,
        }

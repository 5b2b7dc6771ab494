from spectrum.exceptions import ParameterError


class ConfigError(ParameterError):
    """Run configuration rejected by the serializer; ``errors`` maps field names to messages."""

    def __init__(self, errors):
        self.errors = errors
        super().__init__('; '.join(format_errors(errors)))


def format_errors(errors):
    """Flatten DRF error details into ``field: message`` lines."""
    lines = []
    for field_name, messages in errors.items():
        if isinstance(messages, dict):
            lines += [f"{field_name}.{line}" for line in format_errors(messages)]
            continue
        if not isinstance(messages, (list, tuple)):
            messages = [messages]
        lines += [f"{field_name}: {message}" for message in messages]
    return lines

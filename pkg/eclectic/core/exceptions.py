class EclecticError(Exception):
    """Base class for every error raised by the core app."""


class DataError(EclecticError):
    pass


class FetchError(DataError):
    pass


class ConfigError(EclecticError):
    def __init__(self, errors):
        self.errors = errors
        super().__init__(self.render(errors))

    @staticmethod
    def render(errors, prefix=""):
        lines = []
        if isinstance(errors, dict):
            for key, value in errors.items():
                lines.extend(ConfigError.render(value, f"{prefix}{key}.").splitlines())
        elif isinstance(errors, (list, tuple)):
            for value in errors:
                lines.extend(ConfigError.render(value, prefix).splitlines())
        else:
            lines.append(f"{prefix.rstrip('.')}: {errors}")
        return "\n".join(lines)


class FitError(EclecticError):
    """A model fit that did not converge or got degenerate input.

    `params` holds the best parameters found (may be None), `flags` the
    numerical conditions seen on the way. `stage` is filled in as the error
    travels up the scenario pipeline.
    """

    def __init__(self, message, *, stage="", params=None, flags=()):
        self.stage = stage
        self.params = params
        self.flags = tuple(flags)
        super().__init__(message)

    def at(self, stage):
        self.stage = f"{stage}/{self.stage}" if self.stage else stage
        return self

    def __str__(self):
        message = super().__str__()
        return f"[{self.stage}] {message}" if self.stage else message

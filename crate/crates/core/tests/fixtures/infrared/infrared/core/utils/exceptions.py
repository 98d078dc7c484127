class IRException(Exception):
    """Base exception for all infrared errors."""

    def __init__(self, message):
        self.message = message
        super(IRException, self).__init__(message)


class IRDeprecationException(IRException):
    """Raised when a deprecated argument is used together with its replacement."""

    def __init__(self, deprecated):
        self.deprecated = deprecated
        super(IRDeprecationException, self).__init__('{} is deprecated'.format(deprecated))

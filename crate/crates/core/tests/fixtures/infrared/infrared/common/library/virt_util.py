COMMANDS = {}


def register(cmd_name, **kwargs):
    """Registers a virt command."""
    def decorator(func):
        COMMANDS.setdefault(
            cmd_name, {'call': func, 'args': kwargs.keys()}
        )
        return func
    return decorator


class Util(object):
    """Helpers for virtual machine commands."""

    def __init__(self, module):
        self.module = module

    def _validate_args(self, *args):
        """Returns the list of required arguments that are missing."""
        absent = []
        for arg in args:
            if self.module.params.get(arg) is None:
                absent.append(arg)
        return absent

    def list_vms(self):
        """Lists the known virtual machines."""
        return sorted(self.module.params.get('vms', []))

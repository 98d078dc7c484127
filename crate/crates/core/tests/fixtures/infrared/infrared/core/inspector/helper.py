from typing import Any, Generator, Tuple


class SpecDictHelper:
    """Controls the spec dicts and provides useful methods to get spec info."""

    def __init__(self, spec_dict):
        self.spec_dict = spec_dict

    def iterate_parsers(self):
        """Iterates over the main parsers and subparsers."""
        for subparser_name, subparser_dict in self.spec_dict.get('subparsers', {}).items():
            yield dict(name=subparser_name, **subparser_dict)

    def get_option_spec(self, command_name, argument_name) -> Any:
        """Gets the specification for the specified option name."""
        for parser in self.iterate_parsers():
            if parser['name'] == command_name:
                options = self._get_all_options_spec(parser)
                return next((opt for opt in options if opt['name'] == argument_name), {})
        return {}

    def iterate_option_specs(self) -> Generator[Tuple[dict, dict], Any, None]:
        """Iterates over all the option specs."""
        for parser in self.iterate_parsers():
            for spec_option in self._get_all_options_spec(parser):
                yield parser, spec_option

    @staticmethod
    def _get_all_options_spec(parser_dict):
        """Gets all the options specification as the list of dicts."""
        result = []
        for group in parser_dict.get('groups', []):
            for option_name, option_dict in group.get('options', {}).items():
                result.append(dict(name=option_name, **option_dict))
        return result

BANNED_WORDS = {'spam', 'scam'}


class SpamFilter:
    """Flags comments that contain banned words or too many links."""

    def __init__(self, max_links=2):
        self.max_links = max_links

    def count_links(self, text):
        return text.count('http://') + text.count('https://')

    def is_spam(self, text):
        """True when the text looks like spam."""
        words = set(text.lower().split())
        return bool(words & BANNED_WORDS) or self.count_links(text) > self.max_links

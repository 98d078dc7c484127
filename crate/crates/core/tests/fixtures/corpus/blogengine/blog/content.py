import re


class Post:
    """A published or draft article."""

    def __init__(self, slug, title, body, author):
        self.slug = slug
        self.title = title
        self.body = body
        self.author = author
        self.tags = set()
        self.published = False

    def word_count(self):
        """Number of words in the body."""
        return len(self.body.split())

    def add_tag(self, tag):
        self.tags.add(tag.lower())


class Comment:
    """A reader comment attached to a post."""

    def __init__(self, post_slug, author, text):
        self.post_slug = post_slug
        self.author = author
        self.text = text
        self.approved = False


def slugify(title):
    """Lowercase, dash-separated slug for a title."""
    return re.sub(r'[^a-z0-9]+', '-', title.lower()).strip('-')

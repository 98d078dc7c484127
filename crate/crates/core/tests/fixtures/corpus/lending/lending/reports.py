from lending.catalog import Catalog
from lending.members import MemberDirectory


def availability_report(catalog: Catalog, text):
    """Title and shelf count of books matching text."""
    return ['{}: {}'.format(b.title, b.available_copies()) for b in catalog.search_title(text)]


def member_report(directory: MemberDirectory, catalog: Catalog, member_id):
    """Titles currently borrowed by a member."""
    member = directory.get_member(member_id)
    return [catalog.find_book(isbn).title for isbn in member.borrowed]

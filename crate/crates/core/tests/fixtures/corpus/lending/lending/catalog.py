class Book:
    """A title with a number of physical copies."""

    def __init__(self, isbn, title, copies=1):
        self.isbn = isbn
        self.title = title
        self.copies = copies
        self.on_loan = 0

    def available_copies(self):
        """Copies currently on the shelf."""
        return self.copies - self.on_loan


class Catalog:
    """All books known to the library."""

    def __init__(self):
        self.books = {}

    def add_book(self, book: Book):
        """Adds a book or merges its copies into an existing entry."""
        existing = self.find_book(book.isbn)
        if existing is None:
            self.books[book.isbn] = book
        else:
            existing.copies += book.copies

    def find_book(self, isbn) -> Book:
        """Book with the given isbn, or None."""
        return self.books.get(isbn)

    def search_title(self, text):
        """Books whose title contains text, case-insensitively."""
        needle = text.lower()
        return [b for b in self.books.values() if needle in b.title.lower()]

from blog.content import Comment, Post, slugify
from blog.moderation import SpamFilter
from blog.repository import CommentRepository, PostRepository


class BlogService:
    """Authoring, publishing and commenting."""

    def __init__(self, posts: PostRepository, comments: CommentRepository, spam: SpamFilter):
        self.posts = posts
        self.comments = comments
        self.spam = spam

    def create_post(self, title, body, author) -> Post:
        """Creates a draft post with a slug derived from the title."""
        post = Post(slugify(title), title, body, author)
        self.posts.add_post(post)
        return post

    def publish(self, slug):
        """Marks a draft as published."""
        post = self.posts.get_post(slug)
        if post is None:
            raise KeyError(slug)
        post.published = True
        return post

    def tag_post(self, slug, *tags):
        """Adds tags to an existing post."""
        post = self.posts.get_post(slug)
        for tag in tags:
            post.add_tag(tag)
        return post

    def submit_comment(self, slug, author, text):
        """Stores a comment, auto-approving it unless it is spam."""
        if self.posts.get_post(slug) is None:
            raise KeyError(slug)
        comment = Comment(slug, author, text)
        comment.approved = not self.spam.is_spam(text)
        self.comments.add_comment(comment)
        return comment

    def moderation_queue(self, slug):
        """Comments of a post still waiting for approval."""
        return [c for c in self.comments.comments_for(slug) if not c.approved]

from tasks.backend import QueueBackend, ResultStore
from tasks.job import Job


class TaskClient:
    """Submits jobs and reads results."""

    def __init__(self, queue: QueueBackend, results: ResultStore):
        self.queue = queue
        self.results = results
        self.next_id = 0

    def submit(self, name, **payload) -> Job:
        """Enqueues a new job and returns it."""
        self.next_id += 1
        job = Job(self.next_id, name, payload)
        self.queue.push(job)
        return job

    def status(self, job_id):
        """State of a job, or 'unknown'."""
        job = self.queue.get_job(job_id)
        return job.state if job is not None else 'unknown'

    def result(self, job_id):
        """Result of a finished job."""
        return self.results.get_result(job_id)

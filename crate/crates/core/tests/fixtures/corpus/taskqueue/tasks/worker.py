from tasks.backend import QueueBackend, ResultStore
from tasks.job import Clock, Job
from tasks.registry import HandlerRegistry


class Worker:
    """Pulls jobs off the queue and runs their handlers."""

    def __init__(self, queue: QueueBackend, results: ResultStore, registry: HandlerRegistry, clock: Clock):
        self.queue = queue
        self.results = results
        self.registry = registry
        self.clock = clock
        self.log = []

    def run_job(self, job: Job):
        """Runs one job, storing its result or error and requeueing on failure."""
        handler = self.registry.resolve(job.name)
        job.mark_running()
        try:
            value = handler(**job.payload)
        except Exception as error:
            self.results.save_error(job.job_id, error)
            if job.can_retry():
                self.queue.push(job)
            else:
                job.mark_failed()
            return False
        job.mark_done()
        self.results.save_result(job.job_id, value)
        return True

    def run_next(self):
        """Runs the oldest pending job, if any."""
        job = self.queue.pop()
        if job is None:
            return None
        started = self.clock.now()
        ok = self.run_job(job)
        self.log.append((job.job_id, ok, self.clock.now() - started))
        return ok

    def drain(self):
        """Runs jobs until the queue is empty."""
        count = 0
        while self.queue.size():
            self.run_next()
            count += 1
        return count

class AlertRule:
    """Fires when a reading of one kind crosses a threshold."""

    def __init__(self, kind, threshold, above=True):
        self.kind = kind
        self.threshold = threshold
        self.above = above

    def matches(self, kind, value):
        """True when the value breaches this rule."""
        if kind != self.kind:
            return False
        return value > self.threshold if self.above else value < self.threshold


class AlertLog:
    """Raised alerts in order."""

    def __init__(self):
        self.entries = []

    def record(self, sensor_id, message):
        """Appends an alert message for a sensor."""
        self.entries.append((sensor_id, message))

    def for_sensor(self, sensor_id):
        return [m for s, m in self.entries if s == sensor_id]

# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Classes relating to the queues used to pass ticks from the reader
to the FlowEngine workers."""

class QueueItem:
    """Base class for items passed to an engine worker on its queue."""

    def __init__(self, payload):
        self._payload = payload

    @property
    def payload(self):
        return self._payload

class TickQueueItem(QueueItem):
    """A trade for the pipeline of one ticker."""

    class Payload:
        def __init__(self, ticker, tick):
            self.ticker = ticker
            self.tick = tick

    def __init__(self, ticker, tick):
        payload = TickQueueItem.Payload(ticker, tick)
        super().__init__(payload)

class EndOfStreamQueueItem(QueueItem):
    """Signals a worker that no more ticks will arrive."""

    class Payload:
        pass

    def __init__(self):
        payload = EndOfStreamQueueItem.Payload()
        super().__init__(payload)

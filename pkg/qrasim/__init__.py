"""Q-learning random access simulator for slotted mMTC networks."""

__version__ = "0.1.0"

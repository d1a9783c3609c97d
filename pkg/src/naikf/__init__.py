"""Neural-aided adaptive invariant Kalman filtering for IMU/DVL dead reckoning."""

__version__ = "0.1.0"

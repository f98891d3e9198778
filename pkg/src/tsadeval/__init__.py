"""Time-domain anomaly-detection evaluation for irregular telemetry."""

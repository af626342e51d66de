# Deterministic MANET simulator: elections, trust-based detection, localization and tracking

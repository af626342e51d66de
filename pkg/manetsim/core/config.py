"""Configuration constants and logging for the MANET simulator"""

import logging

# Radio defaults
SPEED_OF_LIGHT = 3.0e8  # m/s
TRANSMISSION_RANGE = 300.0  # meters
PATH_EXPONENT = 2.0  # free-space received-energy law

# Ranging
PACKETS_PER_READING = 3
READINGS_PER_RANGE = 3
RANGE_ACCEPT_THRESHOLD = 2.0  # meters
MAX_RANGE_RETRIES = 5
PACKET_INTERVAL = 0.005  # seconds between management packets

# Localization
COLLINEAR_EPS = 1e-6  # m^2, minimum reference triangle area
SOLVER_TOLERANCE = 1e-9  # meters
SOLVER_MAX_ITERATIONS = 50
MIRROR_AMBIGUITY = 0.5  # meters of residual within which candidates compete
RESIDUAL_REMEASURE = 10.0  # meters

# Tracking
ZONE_R1 = 10.0  # meters
ZONE_CONTOURS = 10
ZONE_HALF_ANGLE = 45.0  # degrees
MAX_HALF_ANGLE = 90.0
MAX_COAST_EPOCHS = 3

# Trust
TRUST_THRESHOLD = 0.5
BEHAVIOUR_ALPHA = 0.3
MISBEHAVIOUR_LIMIT = 0.8

# Elections
OCF_WEIGHTS = (0.46, 0.22, 0.22, 0.10)
BCF_WEIGHTS = (0.44, 0.23, 0.23, 0.10)
BCF_THRESHOLD = 0.8
REFERENCE_TOP_K = 8
SPREAD_PENALTY = 1.0  # lambda in the equidistance score
SECTOR_REPLY_WINDOW = 0.1  # seconds per sector, staggered
ELECTION_INTERVAL = 30.0  # seconds

# Float formatting for every exported file
FLOAT_FORMAT = "{:.6f}"


# Logging configuration
def setup_logging(level: str = "WARNING"):
    """Setup logging configuration"""
    logging.basicConfig(level=logging.WARNING)
    logger = logging.getLogger("manetsim")
    logger.setLevel(level.upper())

    # Separate logger for per-step simulation diagnostics
    debug_logger = logging.getLogger("manetsim.debug")
    debug_logger.setLevel(logging.INFO)
    debug_logger.propagate = False
    if not debug_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        debug_logger.addHandler(handler)
    debug_logger.disabled = level.upper() != "DEBUG"

    return logger, debug_logger


def _configured_level() -> str:
    from .settings import settings

    return settings.log_level


# Global logger instances
logger, debug_logger = setup_logging(_configured_level())

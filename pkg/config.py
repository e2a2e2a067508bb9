import os
from dotenv import load_dotenv
load_dotenv()

APP_NAME = "CatQueue"
VERSION = "0.3.0"

# Candidate states scanned when taking inf_k alpha_k(t)
K_EVAL = int(os.getenv("CATQUEUE_K_EVAL", "10000"))

DEFAULT_STEP = float(os.getenv("CATQUEUE_STEP", "1e-4"))
RECORD_EVERY = int(os.getenv("CATQUEUE_RECORD_EVERY", "1000"))

# Grid used for sup_t of rates (essential bound, nonnegativity checks)
GRID_POINTS = int(os.getenv("CATQUEUE_GRID_POINTS", "10000"))
APERIODIC_HORIZON = float(os.getenv("CATQUEUE_APERIODIC_HORIZON", "10.0"))

LOG_LEVEL = os.getenv("CATQUEUE_LOG_LEVEL", "WARNING")
WORKERS = int(os.getenv("CATQUEUE_WORKERS", "1"))

import os

def get_output_dir():
    return os.getenv("NEARBEST_OUT_DIR", "results")

def get_thread_count():
    return int(os.getenv("NEARBEST_THREADS", "1"))

def get_map_tolerance():
    return float(os.getenv("NEARBEST_MAP_TOL", "1e-8"))

def get_lock_timeout():
    return float(os.getenv("NEARBEST_LOCK_TIMEOUT", "2"))

def get_log_config_path():
    return os.getenv("NEARBEST_LOG_CONFIG")

def get_log_dir():
    return os.getenv("NEARBEST_LOG_DIR")

# Core simulation modules

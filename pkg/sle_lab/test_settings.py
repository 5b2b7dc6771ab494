from .settings import *  # noqa
import logging

# Set test environment
TESTING = True

# Small blocks so the worker pool is exercised by modest path counts
SLE_LAB = {**SLE_LAB, 'BLOCK_SIZE': 32}  # noqa: F405

# Disable logging during tests
logging.disable(logging.CRITICAL)

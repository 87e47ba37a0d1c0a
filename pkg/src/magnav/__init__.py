from ._backend import current_backend, use_backend

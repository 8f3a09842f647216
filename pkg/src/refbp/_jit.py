"""Optional numba acceleration for the hot right-hand sides."""

try:
    from numba import njit

    def maybe_njit(func):
        return njit(cache=True, fastmath=False)(func)

except ImportError:  # pragma: no cover - numba is a declared dependency

    def maybe_njit(func):
        return func

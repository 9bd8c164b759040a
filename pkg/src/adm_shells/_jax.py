"""JAX configuration shared by every module that builds kernels."""
import os

import jax
import jax.numpy as jnp

jax.config.update("jax_enable_x64", True)

_cache = os.environ.get("ADM_SHELLS_JAX_CACHE", os.path.expanduser("~/.cache/adm_shells/jax"))
if _cache and _cache.lower() != "off":
    try:
        os.makedirs(_cache, exist_ok=True)
        jax.config.update("jax_compilation_cache_dir", _cache)
        jax.config.update("jax_persistent_cache_min_compile_time_secs", 0.5)
    except Exception:  # pragma: no cover - cache is an optimisation only
        pass

CHUNK = 8192


def batched(fn, *arrays, chunk: int | None = None, args=()):
    """Apply a jitted, vmapped ``fn(x, *args)`` over the leading axis in chunks."""
    import numpy as np

    chunk = chunk or CHUNK
    n = len(arrays[0])
    if n == 0:
        out = fn(*(jnp.zeros((1,) + a.shape[1:]) for a in arrays), *args)
        return jax.tree_util.tree_map(lambda o: np.zeros((0,) + o.shape[1:]), out)
    pieces = []
    for s in range(0, n, chunk):
        sl = [jnp.asarray(a[s : s + chunk]) for a in arrays]
        m = len(sl[0])
        if m < chunk and n > chunk:
            # pad the tail so the compiled shape is reused
            sl = [jnp.concatenate([a, jnp.repeat(a[-1:], chunk - m, axis=0)]) for a in sl]
        out = fn(*sl, *args)
        pieces.append(jax.tree_util.tree_map(lambda o: np.asarray(o)[:m], out))
    return jax.tree_util.tree_map(lambda *p: np.concatenate(p, axis=0), *pieces)


__all__ = ["jax", "jnp", "batched", "CHUNK"]

"""Three-field stabilized finite elements for solids, fluids and their coupling."""
import jax

jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"

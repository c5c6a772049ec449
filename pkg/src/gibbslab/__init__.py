"""Thermodynamic formalism and uniform-approximation experiments for
expanding Markov interval maps."""

from .errors import (
    BracketFailure,
    ConfigError,
    DegenerateFit,
    DenominatorOverflow,
    GenerationTooLarge,
    GibbsLabError,
    HorizonOverflow,
    InadmissibleWord,
    NonExpanding,
    NonMarkovImage,
    NotCovering,
    NotPrimitive,
    ParameterOrder,
)
from .maps import (
    BranchSpec,
    Cylinder,
    MarkovMap,
    PartitionSpec,
    Word,
    build_map,
    cylinder_for_word,
    cylinders_touching,
    derivative_product,
    doubling_map,
    enumerate_cylinders,
    locate,
)
from .thermo import (
    GibbsModel,
    MixingReport,
    Potential,
    birkhoff_sum,
    combine_potentials,
    gibbs_constant,
    gibbs_model,
    mixing_report,
    normalize,
    pressure,
    quasi_bernoulli_check,
)

__version__ = "0.1.0"

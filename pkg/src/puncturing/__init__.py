"""Two-way punctured kernel matrices: construction, spectra and predictions.

The kernel ``K = {(1/p) (X*S)^H (X*S)} * B`` punctures the data with a
Bernoulli mask ``S`` and the Gram matrix with a symmetric Bernoulli mask
``B``. The package builds ``K`` sparsely, extracts its dominant eigenpairs and
evaluates the large-dimensional predictions for its spectrum, spikes and
eigenvector alignments.
"""
from .eigen import EigenBasis, EigenPair, alignment, dense_eigen_oracle, dense_eigenvalues, top_eigen
from .errors import (
    BranchSelectionError,
    ConfigError,
    ConvergenceError,
    DataError,
    DimensionError,
    DomainError,
    InputError,
    NumericalError,
    PuncturingError,
    SizeError,
)
from .kernel import PuncturedKernel, available_backends, build_kernel, dense_kernel_oracle, matvec
from .masks import DataMask, KernelMask, MaskConfig, gen_data_mask, gen_kernel_mask
from .synth import (
    GmmModel,
    GroundTruth,
    SpikedPcaModel,
    classify_by_sign,
    draw_class_means,
    sample_gmm,
    sample_spiked_pca,
    two_class_means,
)
from .theory import (
    SpikePrediction,
    SpikeSpectrum,
    TheoryParams,
    clustering_error,
    f_poly,
    g_func,
    gamma_threshold,
    limiting_density,
    small_eps_summary,
    solve_stieltjes,
    spike_prediction,
    support_edges,
    zeta_from_f_identity_check,
)

__version__ = "0.1.0"

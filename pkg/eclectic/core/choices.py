from django.db import models


# =====================================================
# MARGINALS / VOLATILITY
# =====================================================


class MarginalFamily(models.TextChoices):
    GAUSSIAN = "norm", "Gaussian"
    STUDENT_T = "t", "Student's t"
    NONCENTRAL_T = "nct", "Non-central Student's t"
    JOHNSON_SU = "johnsonsu", "Johnson SU"
    TUKEY_LAMBDA = "tukeylambda", "Tukey lambda"
    LAPLACE = "laplace", "Laplace"
    ASYMMETRIC_LAPLACE = "laplace_asymmetric", "Asymmetric Laplace"
    EMPIRICAL = "empirical", "Empirical"


class InnovationDist(models.TextChoices):
    GAUSSIAN = "norm", "Gaussian"
    STUDENT_T = "t", "Student's t"


# =====================================================
# COPULAS
# =====================================================


class CopulaFamily(models.TextChoices):
    INDEPENDENCE = "indep", "Independence"
    GAUSSIAN = "gaussian", "Gaussian"
    STUDENT_T = "t", "Student's t"
    CLAYTON = "clayton", "Clayton"
    GUMBEL = "gumbel", "Gumbel"
    FRANK = "frank", "Frank"
    JOE = "joe", "Joe"


class CopulaPreset(models.TextChoices):
    ELLIPTICAL = "elliptical", "Elliptical"
    ARCHIMEDEAN = "archimedean", "Archimedean"
    ALLFAM = "allfam", "All families"


# =====================================================
# GENERATIVE MODELS
# =====================================================


class Dependence(models.TextChoices):
    MV_GAUSSIAN = "mvnorm", "Multivariate Gaussian"
    MV_STUDENT_T = "mvt", "Multivariate Student's t"
    GAUSS_COPULA = "mvcop norm", "Gaussian copula"
    T_COPULA = "mvcop t", "Student's t copula"
    RVINE = "vinecop", "R-vine copula"
    DCC = "dcc11", "DCC(1,1)"


class MarginalMode(models.TextChoices):
    PARAMETRIC = "p", "Parametric"
    EMPIRICAL = "np", "Empirical"
    NOT_APPLICABLE = "na", "Not applicable"


# =====================================================
# OBJECTIVES
# =====================================================


class ObjectiveTag(models.TextChoices):
    KELLY = "Kelly", "Kelly"
    KELLY_EXPANSION4 = "KellyExpansion4", "Kelly 4th-order expansion"
    MIN_VARIANCE = "minVariance", "Minimum variance"
    MAX_EXP_RETN = "maxExpRetn", "Maximum expected return"
    MIN_DOWNSIDE_FREQ = "minDownsideFreq", "Minimum downside frequency"
    MIN_DOWNSIDE_VARIANCE = "minDownsideVariance", "Minimum downside variance"
    MAX_SHARPE = "maxSharpeRatio", "Maximum Sharpe ratio"
    MAX_SORTINO = "maxSortinoRatio", "Maximum Sortino ratio"
    MAX_BERNADO_LEDOIT = "maxBernadoLedoitRatio", "Maximum Bernado-Ledoit ratio"
    MIN_VAR = "minVaR", "Minimum value-at-risk"
    MIN_ES = "minES", "Minimum expected shortfall"
    LONG_PARITY = "LongParity", "Long weight parity"
    SHORT_PARITY = "ShortParity", "Short weight parity"
    VARIANCE_PARITY = "VarianceParity", "Variance parity"


# =====================================================
# BANDIT
# =====================================================


class SimilarityKind(models.TextChoices):
    COSINE = "cosine", "Cosine"
    ZSCORE = "ndtr", "Z-score"
    L1 = "L1", "L1 distance"
    L2 = "L2", "L2 distance"
    LINF = "Linf", "L-infinity distance"


class ActivationKind(models.TextChoices):
    MAXOUT = "maxout", "Maxout"
    SOFTMAX = "softmax", "Softmax"
    LOGISTIC = "logistic", "Logistic"
    TANH = "tanh", "Tanh"
    LEAKY_RELU = "leaky relu", "Leaky ReLU"
    LOGIT = "logit", "Logit"
    PROBIT = "probit", "Probit"


class Policy(models.TextChoices):
    BLEND = "blend", "Blend"
    SWITCH = "switch", "Switch"


# =====================================================
# ATTRIBUTION
# =====================================================


class Scheme(models.TextChoices):
    FIXED = "fixed", "Fixed arms"
    ECLECTIC = "eclectic", "Eclectic"


class Measure(models.TextChoices):
    SIMPLE_RETURN = "simple-return", "Simple return"
    LOGIT_COSINE = "logit-cosine", "Logit-cosine"
    LOGIT_TURNOVER = "logit-turnover", "Logit-turnover"

"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` so that the CLI can
serialize failures without string matching.
"""


class SparseRestoreError(Exception):
    code = "error"


class DimensionMismatch(SparseRestoreError, ValueError):
    code = "dimension-mismatch"


class InvalidDictionary(SparseRestoreError, ValueError):
    code = "invalid-dictionary"


class ConditionNotMet(SparseRestoreError):
    code = "condition-not-met"


class SingularInterferenceSupport(SparseRestoreError):
    code = "singular-interference-support"


class DRSingular(SparseRestoreError):
    code = "dr-singular"


class InfeasibleBudget(SparseRestoreError):
    code = "infeasible-budget"

    def __init__(self, eta, distance):
        super().__init__(
            f"noise budget eta={eta:.6g} is below the distance {distance:.6g} "
            "from the observation to the range of the dictionary"
        )
        self.eta = eta
        self.distance = distance


class NoSparseSolution(SparseRestoreError):
    code = "no-sparse-solution"


class EnumerationBudgetExceeded(SparseRestoreError):
    code = "budget-exceeded"

    def __init__(self, required, budget):
        super().__init__(
            f"enumeration needs {required} supports, budget is {budget}"
        )
        self.required = required
        self.budget = budget

"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"calculus.ExponentOutOfRange"``)
that the CLI prints next to the message.
"""


class EBError(Exception):
    module = "eb"

    def __init__(self, *args, module=None):
        super().__init__(*args)
        if module is not None:
            self.module = module

    @property
    def code(self):
        return f"{self.module}.{type(self).__name__}"


# fnmodel
class FnModelError(EBError):
    module = "fnmodel"


class OffGridQuery(FnModelError, ValueError):
    pass


class NoDerivativeOracle(FnModelError, TypeError):
    pass


class UndefinedAt(FnModelError, ValueError):
    pass


class EmptyRegion(FnModelError, ValueError):
    pass


class InvalidFunction(FnModelError, ValueError):
    pass


# envelope
class EnvelopeError(EBError):
    module = "envelope"


class AllInfinite(EnvelopeError, ValueError):
    pass


# varanalysis
class VarAnalysisError(EBError):
    module = "varanalysis"


class BoundaryNode(VarAnalysisError, ValueError):
    pass


class NoAdmissiblePairs(VarAnalysisError, ValueError):
    pass


class OutsideDomain(VarAnalysisError, ValueError):
    pass


# certify
class CertifyError(EBError):
    module = "certify"


class DegenerateFit(CertifyError, ValueError):
    pass


class NonConstantOnSet(CertifyError, ValueError):
    pass


class InvalidCertificate(CertifyError, ValueError):
    pass


class PlanMismatch(CertifyError, ValueError):
    pass


# calculus
class CalculusError(EBError):
    module = "calculus"


class ExponentOutOfRange(CalculusError, ValueError):
    pass


class ConstantTooLarge(CalculusError, ValueError):
    pass


class HypothesisViolated(CalculusError, ValueError):
    pass


class CoverIncomplete(CalculusError, ValueError):
    pass


class MissingModulus(CalculusError, ValueError):
    pass


# catalog
class CatalogError(EBError):
    module = "catalog"


class UnknownEntry(CatalogError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NothingToAudit(CatalogError, ValueError):
    pass

from .cases import CASES, CaseError, ManufacturedCase, case_quartic, case_sine, check_case, make_case
from .report import SCHEMA, export_report, import_report, report_to_json
from .study import ConvergenceReport, LevelResult, StudyError, run_convergence

__all__ = ["CASES", "CaseError", "ManufacturedCase", "case_quartic", "case_sine", "check_case",
           "make_case", "SCHEMA", "export_report", "import_report", "report_to_json",
           "ConvergenceReport", "LevelResult", "StudyError", "run_convergence"]

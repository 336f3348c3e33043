from .report_persistence import ReportPersistence

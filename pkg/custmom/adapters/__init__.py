from .table_adapter import ReportTable, TableAdapter

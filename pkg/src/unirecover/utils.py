from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

from rich.console import Console
from rich.table import Table

from unirecover.config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Map in input order; thread count capped by UNIRECOVER_THREADS"""
    items = list(items)
    threads = threads if threads is not None else get_settings().threads
    if not threads or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def pretty_print_rows(title: str, header: Sequence[str], rows: Sequence[dict], console: Optional[Console] = None):
    """Render experiment rows as a rich table, failing pass flags in red"""
    console = console or Console()
    table = Table(title=title)
    for name in header:
        table.add_column(name)
    for row in rows:
        cells = []
        for name in header:
            value = row.get(name)
            if name == "pass" and value is False:
                cells.append("[bold red]False[/bold red]")
            elif isinstance(value, float):
                cells.append(f"{value:.6g}")
            else:
                cells.append("" if value is None else str(value))
        table.add_row(*cells)
    console.print(table)

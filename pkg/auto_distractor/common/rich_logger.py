import io
import sys
import traceback
from contextlib import contextmanager
from typing import Iterable, Optional, Sequence

import pyfiglet
from loguru import logger
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table
from rich.text import Text

_verbose = False


def configure_logging(verbose: bool = False, console: Optional[Console] = None) -> None:
    """Route loguru records through a RichHandler on stderr.

    stdout is reserved for JSON-lines output, so every log line goes to stderr.
    """
    global _verbose
    _verbose = verbose
    logger.remove()
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        markup=False,
        rich_tracebacks=True,
    )
    logger.add(handler, level="DEBUG" if verbose else "INFO", format="{message}")


class RichLogger:
    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console(stderr=True)
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=self.console
        )

    def print_title(self, title: str, subtitle: str = None):
        """Print a fancy ASCII art title using Pyfiglet"""
        ascii_art = pyfiglet.figlet_format(title, font='small')

        panel = Panel(
            Text(ascii_art, style="bold blue") +
            (Text(f"\n{subtitle}", style="cyan") if subtitle else Text("")),
            border_style="blue",
            expand=False
        )

        self.console.print(panel)
        self.console.print()

    def print_success(self, message: str):
        self.console.print(f"[green]✓[/green] {message}")

    def print_error(self, message: str):
        """Print an error message, with the active traceback in verbose mode"""
        exc_type, exc_value, exc_traceback = sys.exc_info()
        self.console.print(f"[red]✗[/red] {message}")
        if exc_traceback and _verbose:
            self.console.print(f"[red]{exc_type.__name__}: {exc_value}[/red]")
            self.console.print("[yellow]Traceback:[/yellow]")
            for line in traceback.format_tb(exc_traceback):
                self.console.print(line, style="yellow", markup=False)

    def print_warning(self, message: str):
        self.console.print(f"[yellow]⚠[/yellow] {message}")

    def print_info(self, message: str):
        self.console.print(f"[blue]ℹ[/blue] {message}")

    @contextmanager
    def create_progress(self, description: str, total: int = 100):
        """Create a progress bar with a task"""
        task_id = self.progress.add_task(f"[cyan]{description}...", total=total)
        self.progress.start()
        try:
            yield self.progress, task_id
        finally:
            self.progress.stop()
            self.progress.remove_task(task_id)

    def print_table(self, title: str, columns: Sequence[str], rows: Iterable[Sequence[str]]):
        self.console.print(build_table(title, columns, rows))


def build_table(title: str, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> Table:
    table = Table(title=title)
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*row)
    return table


def render_plain(table: Table, width: int = 100) -> str:
    """Render a rich table to plain text, for report files."""
    console = Console(width=width, record=True, file=io.StringIO(), color_system=None)
    console.print(table)
    return console.export_text()

from .destination import Destination
from .file_system import FileSystemDestination, as_destination

__all__ = ["Destination", "FileSystemDestination", "as_destination"]

import os
import logging
from pathlib import Path
from typing import List, Optional


class Helpers:
    @staticmethod
    def get_file_extension(filename: str) -> str:
        """Get file extension in lowercase"""
        return os.path.splitext(str(filename))[1].lower()

    @staticmethod
    def is_policy_file(name: str) -> bool:
        """A --policy argument naming a CSV file rather than a baseline"""
        return Helpers.get_file_extension(name) == '.csv' or Path(name).is_file()

    @staticmethod
    def create_directory_if_not_exists(directory_path) -> bool:
        """Create directory if it doesn't exist"""
        if not directory_path:
            return True
        try:
            os.makedirs(directory_path, exist_ok=True)
            return True
        except OSError as e:
            logging.error(f"Error creating directory {directory_path}: {e}")
            return False

    @staticmethod
    def ensure_parent(path: Optional[str]) -> bool:
        if path is None:
            return True
        return Helpers.create_directory_if_not_exists(os.path.dirname(str(path)))

    @staticmethod
    def split_names(value: str) -> List[str]:
        """'local, cloud,greedy' -> ['local', 'cloud', 'greedy']"""
        return [part.strip() for part in value.split(',') if part.strip()]

    @staticmethod
    def sibling_path(path: str, suffix: str) -> str:
        """results/policy.csv + '_trace' -> results/policy_trace.csv"""
        p = Path(path)
        return str(p.with_name(f"{p.stem}{suffix}{p.suffix or '.csv'}"))

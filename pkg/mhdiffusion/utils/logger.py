"""Logging system for the diffusion workbench"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Any, Optional

from mhdiffusion.config import LOG_LEVEL


def setup_logger(name: str = "mhdiffusion", log_dir: Optional[str] = "logs",
                 level: str = LOG_LEVEL) -> logging.Logger:
    """
    Setup logger with file and console handlers.

    Log format: [TIMESTAMP] [LEVEL] [MODULE] Message
    Logs to: <log_dir>/mhdiffusion_YYYY-MM-DD.log (skipped when log_dir is None)

    Args:
        name: Logger name
        log_dir: Directory for log files, or None for console only
        level: Logging level (DEBUG, INFO, WARNING, ERROR)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    detailed_formatter = logging.Formatter(
        fmt='[%(asctime)s] [%(levelname)8s] [%(name)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    simple_formatter = logging.Formatter(
        fmt='[%(levelname)s] %(message)s'
    )

    if log_dir is not None:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

        log_file = log_path / f"{name}_{datetime.now().strftime('%Y-%m-%d')}.log"
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, level.upper(), logging.INFO))
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    return logger


def log_run_details(logger: logging.Logger, step: str, data: Dict[str, Any]):
    """
    Log one workbench step with details.

    Steps:
    - SCENARIO: Network and model loaded
    - PLAN: Neighbor selection summary
    - SOLVER: LP / branch-and-bound statistics
    - SIMULATION: Monte Carlo run finished
    - THEORY: Theoretical MSD evaluation
    - SWEEP: One budget point of a trade-off sweep
    - SUMMARY: Final figures of a command
    - ERROR: Log error details

    Args:
        logger: Logger instance
        step: Step name
        data: Step-specific data dictionary
    """
    if step == "SCENARIO":
        logger.info("=== SCENARIO ===")
        logger.info(f"Nodes: {data.get('nodes')}, Edges: {data.get('edges')}, M: {data.get('M')}")
        logger.debug(f"Simple topology: {data.get('simple')}")

    elif step == "PLAN":
        logger.info(f"Plan ({data.get('variant')}, {data.get('method')}): "
                    f"objective={data.get('objective'):.6g}, "
                    f"broadcasts={data.get('broadcasts')}, energy={data.get('total_cost'):.6g}")
        for node, consulted in (data.get('consulted') or {}).items():
            logger.debug(f"  node {node}: consults {sorted(consulted)}")

    elif step == "SOLVER":
        logger.info(f"Solver: status={data.get('status')}, nodes explored={data.get('nodes_explored')}, "
                    f"LP solves={data.get('lp_solves')}")
        if data.get('lp_bound') is not None:
            logger.debug(f"  Root LP bound: {data.get('lp_bound'):.6g}")

    elif step == "SIMULATION":
        logger.info(f"Simulation [{data.get('label')}]: {data.get('runs')} runs x {data.get('iterations')} "
                    f"iterations, steady state {data.get('steady_state_db'):.2f} dB")

    elif step == "THEORY":
        logger.info(f"Theory: steady state {data.get('steady_state_db'):.2f} dB, "
                    f"alpha={data.get('alpha')}, beta={data.get('beta')}")

    elif step == "SWEEP":
        logger.info(f"Budget {data.get('budget')}: objective={data.get('objective'):.6g}, "
                    f"steady state {data.get('steady_msd_db'):.2f} dB")

    elif step == "SUMMARY":
        logger.info("=== SUMMARY ===")
        for key, value in data.items():
            logger.info(f"  {key}: {value}")

    elif step == "ERROR":
        error_msg = data.get('error', 'Unknown error')
        logger.error(f"Error: {error_msg}", exc_info=data.get('exc_info'))

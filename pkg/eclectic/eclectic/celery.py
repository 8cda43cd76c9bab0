# eclectic/eclectic/celery.py
import os
from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "eclectic.settings")

app = Celery("eclectic")
app.config_from_object("django.conf:settings", namespace="CELERY")
app.autodiscover_tasks()

const kernel = function (task, host) {
  task.result = task.a + task.b;
};
